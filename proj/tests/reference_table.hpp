#pragma once

// Mean-pooled R^2 rows of a published eight-task EO benchmark leaderboard,
// listed in the order the table prints them, with the printed Avg and marks.

#include <array>
#include <string>
#include <vector>

#include "probebench/report.hpp"

namespace reference {

inline const std::vector<std::string> kTasks{"BiomassMean", "BiomassStd", "Crops",   "Clouds",
                                             "LCAgri",      "LCForest",   "HIMean",  "HIStd"};

struct Row {
  std::string method;
  std::array<double, 8> scores;
  double avg;
};

inline const std::vector<Row> kRows{
    {"ResNet SoftCon (mean)", {-0.282, -0.184, 0.725, -0.022, 0.825, 0.806, 0.070, -0.561}, 0.172},
    {"ResNet DeCur (mean)", {-0.205, -0.127, 0.807, -0.042, 0.856, 0.845, 0.198, -0.427}, 0.238},
    {"ResNet MoCo (mean)", {-0.139, -0.125, 0.798, 0.013, 0.851, 0.838, 0.296, -0.332}, 0.275},
    {"ResNet DINO (mean)", {0.053, 0.005, 0.835, -0.203, 0.870, 0.863, 0.264, -0.282}, 0.301},
    {"ViT DINO (mean)", {0.282, 0.217, 0.843, 0.334, 0.866, 0.863, 0.304, -0.129}, 0.447},
    {"ViT MoCo (mean)", {0.375, 0.293, 0.762, 0.338, 0.827, 0.824, 0.471, 0.158}, 0.506},
    {"ViT MAE (mean)", {0.408, 0.335, 0.609, 0.684, 0.800, 0.804, 0.530, 0.145}, 0.539},
    {"ViT FGMAE (mean)", {0.424, 0.338, 0.630, 0.686, 0.815, 0.826, 0.531, 0.155}, 0.551},
    {"ViT SoftCon (mean)", {0.422, 0.334, 0.763, 0.486, 0.856, 0.851, 0.555, 0.181}, 0.556},
};

// Printed marks per column (8 tasks then Avg): which methods are bold and underlined.
struct ColumnMarks {
  std::vector<std::string> best;
  std::vector<std::string> second;
};

inline const std::vector<ColumnMarks> kMarks{
    {{"ViT FGMAE (mean)"}, {"ViT SoftCon (mean)"}},
    {{"ViT FGMAE (mean)"}, {"ViT MAE (mean)"}},
    {{"ViT DINO (mean)"}, {"ResNet DINO (mean)"}},
    {{"ViT FGMAE (mean)"}, {"ViT MAE (mean)"}},
    {{"ResNet DINO (mean)"}, {"ViT DINO (mean)"}},
    {{"ResNet DINO (mean)", "ViT DINO (mean)"}, {"ViT SoftCon (mean)"}},
    {{"ViT SoftCon (mean)"}, {"ViT FGMAE (mean)"}},
    {{"ViT SoftCon (mean)"}, {"ViT MoCo (mean)"}},
    {{"ViT SoftCon (mean)"}, {"ViT FGMAE (mean)"}},
};

inline std::vector<probebench::MethodScores> method_scores() {
  std::vector<probebench::MethodScores> out;
  for (const auto& r : kRows) {
    probebench::MethodScores m{r.method, {}};
    for (std::size_t t = 0; t < kTasks.size(); ++t) m.per_task[kTasks[t]] = r.scores[t];
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace reference
