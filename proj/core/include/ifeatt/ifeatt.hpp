#pragma once

#include "ifeatt/alt_identification.hpp"
#include "ifeatt/comparators.hpp"
#include "ifeatt/error.hpp"
#include "ifeatt/event_study.hpp"
#include "ifeatt/gmm.hpp"
#include "ifeatt/inference.hpp"
#include "ifeatt/io.hpp"
#include "ifeatt/panel.hpp"
#include "ifeatt/rc.hpp"
#include "ifeatt/simulation.hpp"
