#pragma once

#include "dadmm/consensus_admm.hpp"
#include "dadmm/dual_consensus_admm.hpp"
#include "dadmm/eigensolve.hpp"
#include "dadmm/experiment.hpp"
#include "dadmm/graph.hpp"
#include "dadmm/inner_solvers.hpp"
#include "dadmm/io.hpp"
#include "dadmm/losses.hpp"
#include "dadmm/metrics.hpp"
#include "dadmm/problem.hpp"
#include "dadmm/regularizer.hpp"
