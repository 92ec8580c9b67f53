#include "wegpipe/pipeline.hpp"

int main(int argc, char** argv) { return wegpipe::run_cli(argc, argv); }
