#pragma once

#include "causelens/align.hpp"
#include "causelens/chaingen.hpp"
#include "causelens/config.hpp"
#include "causelens/error.hpp"
#include "causelens/evalreport.hpp"
#include "causelens/metrics.hpp"
#include "causelens/parallel.hpp"
#include "causelens/pipeline.hpp"
#include "causelens/simrep.hpp"
#include "causelens/synth.hpp"
#include "causelens/traceio.hpp"
#include "causelens/unicode.hpp"
