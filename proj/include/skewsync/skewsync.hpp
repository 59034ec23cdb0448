#pragma once

#include "skewsync/errors.hpp"
#include "skewsync/rng.hpp"
#include "skewsync/timebase.hpp"
#include "skewsync/delay_model.hpp"
#include "skewsync/broadcast.hpp"
#include "skewsync/estimators.hpp"
#include "skewsync/skewpipe.hpp"
#include "skewsync/trackers.hpp"
#include "skewsync/stats.hpp"
#include "skewsync/parallel.hpp"
#include "skewsync/config.hpp"
#include "skewsync/report.hpp"
#include "skewsync/simnet.hpp"
#include "skewsync/experiment.hpp"
