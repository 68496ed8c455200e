#pragma once

#include "rater_equiv/agreement.hpp"
#include "rater_equiv/config.hpp"
#include "rater_equiv/csv.hpp"
#include "rater_equiv/error.hpp"
#include "rater_equiv/format.hpp"
#include "rater_equiv/gate.hpp"
#include "rater_equiv/hypothesis.hpp"
#include "rater_equiv/judge/cache.hpp"
#include "rater_equiv/judge/client.hpp"
#include "rater_equiv/judge/judge.hpp"
#include "rater_equiv/judge/prompt.hpp"
#include "rater_equiv/judge_command.hpp"
#include "rater_equiv/random.hpp"
#include "rater_equiv/ratings.hpp"
#include "rater_equiv/report.hpp"
#include "rater_equiv/topset.hpp"
