#pragma once

#include "fieldswarm/value.hpp"
#include "fieldswarm/export.hpp"
#include "fieldswarm/round.hpp"
#include "fieldswarm/events.hpp"
#include "fieldswarm/engine.hpp"
#include "fieldswarm/blocks/resilient.hpp"
#include "fieldswarm/blocks/motion.hpp"
#include "fieldswarm/blocks/structure.hpp"
#include "fieldswarm/blocks/coordination.hpp"
