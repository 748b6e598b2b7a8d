#include "pspider/experiment.hpp"

int main(int argc, char** argv) { return pspider::experiment::main_entry(argc, argv); }
