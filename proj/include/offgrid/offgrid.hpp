#ifndef OFFGRID_OFFGRID_HPP
#define OFFGRID_OFFGRID_HPP

#include "offgrid/bp.hpp"
#include "offgrid/certificate.hpp"
#include "offgrid/core.hpp"
#include "offgrid/error.hpp"
#include "offgrid/experiments.hpp"
#include "offgrid/io.hpp"
#include "offgrid/linalg.hpp"
#include "offgrid/localize.hpp"
#include "offgrid/solver.hpp"
#include "offgrid/version.hpp"

#endif
