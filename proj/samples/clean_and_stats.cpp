// Cleans a few tweets, then prints the class balance and top words of a CSV.
//   clean_and_stats [labeled.csv]

#include "hsd/corpus/stats.hpp"
#include "hsd/textprep/clean_text.hpp"

#include <iostream>

int main(int argc, char **argv) {
    for (const char *raw : {"RT @mayasolovely: As a woman you shouldn't complain :-) http://t.co/xyz",
                            "HELLO World!!! 4 real <3", "\xc2\xbfque pasa?"}) {
        std::cout << '"' << raw << "\" -> \"" << hsd::textprep::clean_text(raw).str() << "\"\n";
    }
    if (argc < 2) {
        return 0;
    }
    try {
        const auto ds = hsd::corpus::load_dataset(argv[1]);
        const auto report = hsd::corpus::stats_report(ds, 10);
        std::cout << "rows: " << report["rows"] << '\n'
                  << "classes: " << report["class_distribution"].dump() << '\n'
                  << "text_length: " << report["descriptive"]["text_length"].dump() << '\n';
        for (const auto &w : report["top_words"]) {
            std::cout << "  " << w["word"].get<std::string>() << ' ' << w["count"] << '\n';
        }
    } catch (const hsd::Error &e) {
        std::cerr << e.what() << '\n';
        return static_cast<int>(e.exit_code());
    }
}
