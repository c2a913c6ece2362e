#pragma once

#include "phaselink/aggregate.hpp"
#include "phaselink/config.hpp"
#include "phaselink/dataset.hpp"
#include "phaselink/error.hpp"
#include "phaselink/eval.hpp"
#include "phaselink/geo.hpp"
#include "phaselink/gridassoc.hpp"
#include "phaselink/gru.hpp"
#include "phaselink/io.hpp"
#include "phaselink/linker.hpp"
#include "phaselink/pick.hpp"
#include "phaselink/rng.hpp"
#include "phaselink/stress.hpp"
#include "phaselink/synth.hpp"
#include "phaselink/velmod.hpp"
#include "phaselink/window.hpp"
