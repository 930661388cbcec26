# Random noise versus an optimized flip attack at the same budget.
# The optimized one hides: training accuracy stays high while test accuracy falls.
from flipdetect.attacks import run_attack
from flipdetect.classifiers import TrainConfig, accuracy, train_mlp
from flipdetect.data import Normalizer, synth_by_difficulty, train_test_split

cfg = TrainConfig(epochs=150)
ds = synth_by_difficulty("easy", 1, seed=3)[0]
split = train_test_split(ds, 0.8, seed=0)

for attack in ("clean", "sln", "falfa", "alfa"):
    if attack == "clean":
        train, flips = split.train, 0
    else:
        res = run_attack(attack, split.train, 0.3, seed=0, cfg=cfg)
        train, flips = res.poisoned, len(res.flipped_indices)
    norm = Normalizer.fit(train.features)
    model = train_mlp(norm.apply(train), cfg)
    print(f"{attack:6s} flips={flips:3d} "
          f"train acc={accuracy(model, norm.apply(train)):.3f} "
          f"test acc={accuracy(model, norm.apply(split.test)):.3f}")
