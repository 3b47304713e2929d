// Builds a thumbnail from one synthetic clip, then trains a small model on a
// small corpus and reports validation AUC.

#include <iostream>

#include "tall/trainer.hpp"

int main() {
    using namespace tall;

    CorpusSpec corpus;
    corpus.videos_per_class = 40;
    corpus.frames = 32;
    corpus.seed = 1;

    const Clip clip = render_clip(corpus, corpus.videos_per_class, 0, 4);  // first fake video
    Rng rng(7);
    const Thumbnail th = tall_transform(clip, 16, LayoutSpec::parse("2x2", 4.0), OrderSpec::forward(), rng);
    std::cout << "clip " << shape_str(clip.frames.shape()) << " -> thumbnail " << shape_str(th.image.shape())
              << ", mask at (" << th.mask.x << ", " << th.mask.y << ")\n";

    TrainConfig cfg;
    cfg.corpus = corpus;
    cfg.epochs = 4;
    cfg.train_clips = cfg.eval_clips = 4;
    std::cout << count_params(effective_model(cfg)) << " parameters\n";

    TrainOptions opt;
    opt.final_test_eval = false;
    opt.log = [](const std::string& line) { std::cout << line << "\n"; };
    Trainer trainer(cfg);
    train(cfg, opt, &trainer);

    const EvalResult val = evaluate(cfg, trainer.params(), Split::val);
    std::cout << "val AUC " << val.auc.value_or(0.0) << ", accuracy " << val.acc << "\n";
}
