#pragma once

// Newton minimization with a line search that uses gradients only.

#include "gradnewton/types.hpp"
#include "gradnewton/linalg.hpp"
#include "gradnewton/oracle.hpp"
#include "gradnewton/solver.hpp"
#include "gradnewton/problems.hpp"
#include "gradnewton/conformal.hpp"
#include "gradnewton/diagnostics.hpp"
#include "gradnewton/trace_io.hpp"
#include "gradnewton/fixtures.hpp"
