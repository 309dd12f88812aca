#include "dispatch.hpp"

int main(int argc, char** argv) {
    return geoact::cli::dispatch(argc, argv);
}
