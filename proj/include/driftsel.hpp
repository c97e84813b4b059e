#ifndef DRIFTSEL_HPP
#define DRIFTSEL_HPP

#include "driftsel/binning.hpp"
#include "driftsel/config.hpp"
#include "driftsel/error.hpp"
#include "driftsel/fit.hpp"
#include "driftsel/ingest.hpp"
#include "driftsel/model_wf.hpp"
#include "driftsel/pipeline.hpp"
#include "driftsel/tsc.hpp"

#endif
