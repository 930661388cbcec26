# Predicting clean accuracy from complexity measures alone.
# Build a small meta-database, fit ridge, and look at a held-out dataset.
from flipdetect import metadb, metalearner
from flipdetect.classifiers import TrainConfig
from flipdetect.data import synth_by_difficulty

cfg = TrainConfig(epochs=100)
datasets = [ds for lv in ("easy", "normal", "hard") for ds in synth_by_difficulty(lv, 3, seed=5)]
train, held = datasets[1:], datasets[0]

db = metadb.build(train, rates=(0.1, 0.3), cfg=cfg)
print(len(db), "meta rows from", len(train), "datasets")
ml = metalearner.fit(db)
print("chosen alpha", ml.alpha)

test = metadb.build([held], rates=(0.1, 0.3), cfg=cfg)
for row in test.rows:
    est = metalearner.predict_clean_acc(ml, row.cmv)
    print(f"{row.variant:6s} rate={row.rate:.1f} true={row.acc_clean:.3f} estimated={est:.3f}")
