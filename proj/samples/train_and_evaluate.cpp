// Trains one preset on a seeded split and prints the test-split report.
//   train_and_evaluate labeled.csv [preset] [epochs]

#include "hsd/corpus/split.hpp"
#include "hsd/evaluation/evaluate.hpp"
#include "hsd/training/presets.hpp"
#include "hsd/training/trainer.hpp"

#include <iostream>

int main(int argc, char **argv) {
    if (argc < 2) {
        std::cerr << "usage: train_and_evaluate labeled.csv [preset] [epochs]\n";
        return 2;
    }
    try {
        const auto ds = hsd::corpus::load_dataset(argv[1]);
        const auto splits = hsd::corpus::split(ds, {});
        auto preset = hsd::training::find_preset(argc > 2 ? argv[2] : "cnn");
        if (argc > 3) {
            preset.train.epochs = std::stoi(argv[3]);
        }
        const auto result = hsd::training::train<float>(preset.spec, splits.train, splits.val, preset.train, {},
                                                        [](const std::string &line) { std::cerr << line << '\n'; });
        const auto report = hsd::evaluation::evaluate(result.model, splits.test, preset.title, preset.train.epochs);
        std::cout << hsd::evaluation::render_classification(report) << '\n'
                  << hsd::evaluation::render_text(hsd::evaluation::compare_report({&report, 1}));
    } catch (const hsd::Error &e) {
        std::cerr << e.what() << '\n';
        return static_cast<int>(e.exit_code());
    }
}
