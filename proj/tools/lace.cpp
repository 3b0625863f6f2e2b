#include "lace/report.hpp"

int main(int argc, char** argv) { return lace::dispatch(argc, argv); }
