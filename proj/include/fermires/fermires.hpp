#pragma once

// Umbrella header: the whole public surface of the library.

#include <fermires/errors.hpp>
#include <fermires/fermi_geometry.hpp>
#include <fermires/oscillatory.hpp>
#include <fermires/resolvent.hpp>
#include <fermires/taylor_newton.hpp>
#include <fermires/torus_symbol.hpp>
#include <fermires/version.hpp>
