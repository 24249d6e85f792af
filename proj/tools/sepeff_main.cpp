#include "sepeff/cli.hpp"

int main(int argc, char** argv) { return sepeff::dispatch(argc, argv); }
