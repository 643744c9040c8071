#pragma once

// Umbrella header for the whole library.

#include "trait/checkpoint.hpp"
#include "trait/config.hpp"
#include "trait/corpus.hpp"
#include "trait/embedding.hpp"
#include "trait/error.hpp"
#include "trait/estimates.hpp"
#include "trait/eval.hpp"
#include "trait/graph.hpp"
#include "trait/lexicon.hpp"
#include "trait/model.hpp"
#include "trait/pipeline.hpp"
#include "trait/sampler.hpp"
#include "trait/synthetic.hpp"
#include "trait/text.hpp"
