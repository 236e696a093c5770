#ifndef COGDIAG_COGDIAG_HPP
#define COGDIAG_COGDIAG_HPP

#include "cogdiag/common.hpp"
#include "cogdiag/csv.hpp"
#include "cogdiag/ingest.hpp"
#include "cogdiag/model.hpp"
#include "cogdiag/train.hpp"
#include "cogdiag/posterior.hpp"
#include "cogdiag/explain.hpp"
#include "cogdiag/analytics.hpp"
#include "cogdiag/synth.hpp"
#include "cogdiag/io.hpp"
#include "cogdiag/service.hpp"

#endif  // COGDIAG_COGDIAG_HPP
