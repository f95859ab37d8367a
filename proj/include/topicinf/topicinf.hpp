#pragma once

#include "topicinf/condition.hpp"
#include "topicinf/core.hpp"
#include "topicinf/error.hpp"
#include "topicinf/evalharness.hpp"
#include "topicinf/gibbs.hpp"
#include "topicinf/io.hpp"
#include "topicinf/mle.hpp"
#include "topicinf/rng.hpp"
#include "topicinf/synth.hpp"
#include "topicinf/tli.hpp"
#include "topicinf/version.hpp"
