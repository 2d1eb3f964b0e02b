#pragma once

// Umbrella header for the thermosleep toolkit.

#include "thermosleep/common.hpp"
#include "thermosleep/csv.hpp"
#include "thermosleep/dates.hpp"
#include "thermosleep/panel_engine.hpp"
#include "thermosleep/pipeline.hpp"
#include "thermosleep/projection.hpp"
#include "thermosleep/response_models.hpp"
#include "thermosleep/sleep_ingest.hpp"
#include "thermosleep/svg.hpp"
#include "thermosleep/synth.hpp"
#include "thermosleep/weather_link.hpp"
