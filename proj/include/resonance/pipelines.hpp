#pragma once

#include "resonance/bumphunt.hpp"
#include "resonance/cwola.hpp"
#include "resonance/density.hpp"

namespace resonance {

// Per-window scorer factories used by scan mode: each call retrains on the
// window it is handed. The CWoLa and ANODE pipelines never see labels.
ScorePipeline make_anode_pipeline(DensityConfig cfg);
ScorePipeline make_cwola_pipeline(ClassifierConfig cfg);
ScorePipeline make_supervised_pipeline(ClassifierConfig cfg);  // needs a labeled dataset

}  // namespace resonance
