#pragma once

#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfml/common.hpp"

namespace rfml::train {

struct EpochRecord {
    int epoch = 0;
    std::vector<double> train_loss;  // per dataset, balancing applied
    double val_loss = 0.0;           // unweighted mean across datasets
    double lr = 0.0;                 // learning rate used for this epoch
    bool halved = false;             // plateau halving fired after this epoch
    double wall_seconds = 0.0;
};

struct TrainLog {
    std::vector<std::string> dataset_names;
    std::vector<EpochRecord> epochs;
    int early_stop_epoch = -1;  // -1: ran to the cap
    double total_wall_seconds = 0.0;

    std::string to_csv() const {
        std::ostringstream os;
        os << "epoch";
        for (const auto& n : dataset_names) os << ",train_loss_" << n;
        os << ",val_loss,lr,halved,wall_seconds\n";
        for (const auto& e : epochs) {
            os << e.epoch;
            for (double l : e.train_loss) os << "," << l;
            os << "," << e.val_loss << "," << e.lr << "," << (e.halved ? 1 : 0) << ","
               << e.wall_seconds << "\n";
        }
        return os.str();
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["dataset_names"] = dataset_names;
        j["early_stop_epoch"] = early_stop_epoch;
        j["total_wall_seconds"] = total_wall_seconds;
        auto rows = nlohmann::ordered_json::array();
        for (const auto& e : epochs)
            rows.push_back({{"epoch", e.epoch},
                            {"train_loss", e.train_loss},
                            {"val_loss", e.val_loss},
                            {"lr", e.lr},
                            {"halved", e.halved},
                            {"wall_seconds", e.wall_seconds}});
        j["epochs"] = rows;
        return j;
    }

    // Digest of everything except wall-clock fields; two seeded runs must agree.
    std::uint64_t digest() const {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (const auto& n : dataset_names) h = fnv1a(n, h);
        h = fnv1a(&early_stop_epoch, sizeof(early_stop_epoch), h);
        for (const auto& e : epochs) {
            h = fnv1a(&e.epoch, sizeof(e.epoch), h);
            h = fnv1a(e.train_loss.data(), e.train_loss.size() * sizeof(double), h);
            h = fnv1a(&e.val_loss, sizeof(e.val_loss), h);
            h = fnv1a(&e.lr, sizeof(e.lr), h);
            h = fnv1a(&e.halved, sizeof(e.halved), h);
        }
        return h;
    }
};

}  // namespace rfml::train
