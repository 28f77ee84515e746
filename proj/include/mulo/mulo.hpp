#pragma once

#include "mulo/checkpoint.hpp"
#include "mulo/config.hpp"
#include "mulo/coordcheck.hpp"
#include "mulo/csv.hpp"
#include "mulo/dataset.hpp"
#include "mulo/features.hpp"
#include "mulo/grid_search.hpp"
#include "mulo/harness.hpp"
#include "mulo/lo.hpp"
#include "mulo/meta_train.hpp"
#include "mulo/optimizee.hpp"
#include "mulo/optimizer_spec.hpp"
#include "mulo/optimizers.hpp"
#include "mulo/parallel.hpp"
#include "mulo/parametrization.hpp"
#include "mulo/pes.hpp"
#include "mulo/rng.hpp"
#include "mulo/tensor.hpp"
