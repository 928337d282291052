#pragma once

#include "dpp/error.hpp"
#include "dpp/special.hpp"
#include "dpp/model.hpp"
#include "dpp/window.hpp"
#include "dpp/fft.hpp"
#include "dpp/spectral.hpp"
#include "dpp/random.hpp"
#include "dpp/sampler.hpp"
#include "dpp/optimize.hpp"
#include "dpp/likelihood.hpp"
#include "dpp/parallel.hpp"
#include "dpp/stats.hpp"
#include "dpp/io.hpp"
