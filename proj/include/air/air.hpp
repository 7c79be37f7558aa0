#pragma once

#include "air/analysis.hpp"
#include "air/attention.hpp"
#include "air/commands.hpp"
#include "air/corpus.hpp"
#include "air/error.hpp"
#include "air/geometry.hpp"
#include "air/map_io.hpp"
#include "air/metrics.hpp"
#include "air/png_io.hpp"
#include "air/program.hpp"
#include "air/random.hpp"
#include "air/scene.hpp"
#include "air/supervision.hpp"
#include "air/synthetic.hpp"
#include "air/toy_model.hpp"
#include "air/toy_task.hpp"
