// Umbrella header.
#pragma once

#include "lebid/estimator.hpp"
#include "lebid/experiment.hpp"
#include "lebid/hyper_em.hpp"
#include "lebid/kernel.hpp"
#include "lebid/lti.hpp"
#include "lebid/nelder_mead.hpp"
#include "lebid/sampler.hpp"
#include "lebid/trunc_gauss.hpp"
#include "lebid/weights.hpp"
