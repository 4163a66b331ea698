#include "tdrc/harness.hpp"

int main(int argc, char** argv) { return tdrc::run_cli(argc, argv); }
