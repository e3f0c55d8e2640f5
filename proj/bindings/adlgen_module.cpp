#include <pybind11/pybind11.h>
PYBIND11_MODULE(_adlgen, m) { m.doc() = "placeholder"; }
