#pragma once

#include "attnboot/attention.hpp"
#include "attnboot/bootstrap.hpp"
#include "attnboot/core.hpp"
#include "attnboot/evaluate.hpp"
#include "attnboot/inference.hpp"
#include "attnboot/io.hpp"
#include "attnboot/metrics.hpp"
#include "attnboot/random.hpp"
#include "attnboot/regularize.hpp"
#include "attnboot/render.hpp"
#include "attnboot/simulate.hpp"
#include "attnboot/stats.hpp"
