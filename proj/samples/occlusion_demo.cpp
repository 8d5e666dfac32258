// Trains a small classifier on compact GS features of the synthetic tones,
// then prints which frequency bands drive one prediction.

#include <iomanip>
#include <iostream>

#include "scatterbox/occlusion.hpp"
#include "scatterbox/scattering.hpp"
#include "scatterbox/synth.hpp"
#include "scatterbox/train.hpp"

int main() {
  using namespace sbx;
  SynthConfig synth;
  synth.clips_per_class = 30;
  const auto clips = synth_corpus(default_synth_classes(), synth, 7);
  const auto cfg = compact_config(Representation::gs);

  LabeledSet train_set, val_set;
  std::vector<Tensor3<double>> held_out;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const auto features = assemble(clips[i].signal, cfg, Representation::gs);
    const std::size_t label = i / synth.clips_per_class;
    auto& set = i % 5 == 0 ? val_set : train_set;
    set.inputs.emplace_back(features.values.values().begin(), features.values.values().end());
    set.labels.push_back(label);
    if (i % 5 == 0) held_out.push_back(features.values);
  }

  ConvClassifierSpec spec{3, 64, 32, {{8, 3, 2}, {8, 3, 2}, {8, 3, 2}, {8, 3, 2}}, 6, 0.001, {}, {}};
  std::tie(spec.input_offset, spec.input_scale) = channel_statistics(train_set, 3);
  ConvClassifier<float> model(spec);
  model.init_he_uniform(1);
  TrainConfig tc;
  tc.batch_size = 32;
  tc.max_weight_updates = 300;
  tc.eval_every = 10;
  tc.stop_at_val_accuracy = 0.98;
  const auto result = train(model, train_set, val_set, val_set, tc);
  std::cout << "validation accuracy " << result.best_val_accuracy << " after " << result.best_update << " updates\n";

  OcclusionConfig occ;
  occ.window_freq = 4;
  occ.window_frames = 4;
  occ.stride_freq = 2;
  occ.stride_frames = 2;
  occ.bin_group = 4;
  const std::size_t sample = 3 * (val_set.size() / 6);  // first held-out violin clip
  const auto map = occlusion_map(result.best_model, held_out[sample], val_set.labels[sample], occ);
  const auto bands = frequency_importance(map, occ.bin_group);
  const double bin_hz = 44100.0 / 1024.0;
  std::cout << "importance of " << occ.bin_group << "-bin bands for class "
            << default_synth_classes()[val_set.labels[sample]].label << ":\n";
  for (std::size_t g = 0; g < bands.size(); ++g)
    std::cout << std::setw(6) << static_cast<int>(g * occ.bin_group * bin_hz) << " Hz  " << std::showpos
              << std::setprecision(4) << bands[g] << std::noshowpos << '\n';
}
