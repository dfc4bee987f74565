#include "s3ps/cli.hpp"

int main(int argc, char** argv) { return s3ps::cli::run_cli(argc, argv); }
