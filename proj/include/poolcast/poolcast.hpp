#pragma once

#include "poolcast/arx.hpp"
#include "poolcast/combine.hpp"
#include "poolcast/combine_linear.hpp"
#include "poolcast/config.hpp"
#include "poolcast/csv_io.hpp"
#include "poolcast/error.hpp"
#include "poolcast/evaluation.hpp"
#include "poolcast/experiment.hpp"
#include "poolcast/frame.hpp"
#include "poolcast/lasso.hpp"
#include "poolcast/normal.hpp"
#include "poolcast/parallel.hpp"
#include "poolcast/pca.hpp"
#include "poolcast/pool.hpp"
#include "poolcast/synthetic.hpp"
#include "poolcast/vst.hpp"
