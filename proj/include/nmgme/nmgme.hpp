#pragma once

#include "nmgme/errors.hpp"
#include "nmgme/grid_quadrature.hpp"
#include "nmgme/bath_kernels.hpp"
#include "nmgme/system_model.hpp"
#include "nmgme/series_kernels.hpp"
#include "nmgme/me_coefficients.hpp"
#include "nmgme/propagator.hpp"
#include "nmgme/oracle.hpp"
#include "nmgme/io.hpp"
#include "nmgme/runner.hpp"
