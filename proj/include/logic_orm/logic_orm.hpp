#pragma once

#include "logic_orm/corpus.hpp"
#include "logic_orm/diversity.hpp"
#include "logic_orm/echo_pipeline.hpp"
#include "logic_orm/error.hpp"
#include "logic_orm/evaluation.hpp"
#include "logic_orm/llm_gateway.hpp"
#include "logic_orm/prompting.hpp"
#include "logic_orm/reward_export.hpp"
#include "logic_orm/run.hpp"
#include "logic_orm/scorer.hpp"
#include "logic_orm/trajectory.hpp"
