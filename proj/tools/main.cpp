#include "logokit/cli/pipeline.hpp"

int main(int argc, char** argv) { return logokit::cli::dispatch(argc, argv); }
