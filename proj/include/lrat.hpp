#pragma once

#include "lrat/analytics.hpp"
#include "lrat/corpus.hpp"
#include "lrat/encoder.hpp"
#include "lrat/error.hpp"
#include "lrat/evaluation.hpp"
#include "lrat/flywheel.hpp"
#include "lrat/hash.hpp"
#include "lrat/io.hpp"
#include "lrat/judge.hpp"
#include "lrat/manifest.hpp"
#include "lrat/mining.hpp"
#include "lrat/prompts.hpp"
#include "lrat/retriever.hpp"
#include "lrat/simulation.hpp"
#include "lrat/text.hpp"
#include "lrat/trainer.hpp"
#include "lrat/trajectory.hpp"
#include "lrat/weighting.hpp"
