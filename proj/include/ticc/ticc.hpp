#pragma once

// Convenience header pulling in the whole library.

#include "ticc/errors.hpp"
#include "ticc/tensor.hpp"
#include "ticc/arnoldi.hpp"
#include "ticc/imps.hpp"
#include "ticc/gates.hpp"
#include "ticc/models.hpp"
#include "ticc/evolve.hpp"
#include "ticc/lbfgs.hpp"
#include "ticc/compile.hpp"
#include "ticc/ftcount.hpp"
#include "ticc/finite.hpp"
#include "ticc/analysis.hpp"
#include "ticc/io.hpp"
#include "ticc/experiments.hpp"
