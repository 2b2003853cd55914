// Reads one text per line from stdin and prints the moderated output, using
// the lexicon rewriter so nothing leaves the machine.
//   moderate_stream checkpoint.safetensors lexicon.tsv < texts.txt

#include "hsd/moderation/pipeline.hpp"

#include <iostream>

int main(int argc, char **argv) {
    if (argc < 3) {
        std::cerr << "usage: moderate_stream checkpoint.safetensors lexicon.tsv < texts.txt\n";
        return 2;
    }
    try {
        const auto model = hsd::models::load_checkpoint<float>(argv[1]);
        hsd::moderation::LexiconRewriter rewriter(hsd::moderation::Lexicon::load(argv[2]));
        std::string line;
        while (std::getline(std::cin, line)) {
            const auto r = hsd::moderation::moderate(line, model, rewriter);
            std::cout << hsd::label_name(r.label) << '\t' << hsd::moderation::action_name(r.action) << '\t'
                      << r.output().value_or("<blocked>") << '\n';
        }
    } catch (const hsd::Error &e) {
        std::cerr << e.what() << '\n';
        return static_cast<int>(e.exit_code());
    }
}
