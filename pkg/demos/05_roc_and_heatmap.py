# Leave-one-dataset-out evaluation on a tiny pool: RMSE per attack,
# ROC of the detection score, and a frozen-threshold heatmap.
from flipdetect.classifiers import TrainConfig
from flipdetect.data import synth_by_difficulty
from flipdetect.evaluation import calibrate, heatmap, lodo_rmse, roc_auc

cfg = TrainConfig(epochs=80)
datasets = [ds for lv in ("easy", "normal", "hard") for ds in synth_by_difficulty(lv, 2, seed=1)]
result, db = lodo_rmse(datasets, ("sln", "falfa", "alfa"), (0.1, 0.3), cfg)

for attack in result.attacks:
    print(f"mean RMSE {attack}: {result.mean_rmse(attack):.3f}")

preds = result.select(None, ("clean", "falfa"), (0.1, 0.3))
curve = roc_auc([p.score for p in preds], [p.row.variant != "clean" for p in preds])
print(f"FALFA ROC AUC over all held-out datasets: {curve.auc:.3f}")

clean = [p.score for p in preds if p.row.variant == "clean"]
t = calibrate(clean, 0.98)
cells = {}
for p in preds:
    level = p.row.dataset_id.split("-")[0]
    cells.setdefault((level, p.row.rate), []).append(p.score)
grid = heatmap(cells, ["easy", "normal", "hard"], (0.1, 0.3), t, "diva")
print("threshold", round(t, 4))
for level in grid.row_axis:
    print(level, [round(grid.cell(level, r), 2) for r in grid.col_axis])
