#pragma once

// Umbrella header for the shellctx toolkit.

#include "shellctx/category.hpp"
#include "shellctx/context.hpp"
#include "shellctx/corpus.hpp"
#include "shellctx/generation.hpp"
#include "shellctx/metrics.hpp"
#include "shellctx/pipeline.hpp"
#include "shellctx/preprocess.hpp"
#include "shellctx/text.hpp"
