#pragma once

// Everything in one include.

#include "pqlab/config.hpp"
#include "pqlab/counterexample.hpp"
#include "pqlab/degiorgi.hpp"
#include "pqlab/errors.hpp"
#include "pqlab/grid.hpp"
#include "pqlab/integrand.hpp"
#include "pqlab/rearrangement.hpp"
#include "pqlab/solver.hpp"
#include "pqlab/studies.hpp"
