# The detector end to end: a clean training set and a FALFA-poisoned copy
# of it, judged by the gap between cross-validated and predicted accuracy.
# Uses the full training budget, so expect a couple of minutes.
from flipdetect import detect, metadb, metalearner
from flipdetect.attacks import run_attack
from flipdetect.data import synth_by_difficulty
from flipdetect.detector import Heuristic

pool = synth_by_difficulty("easy", 10, seed=5)
reference, suspect = pool[:-1], pool[-1]
db = metadb.build(reference)
ml = metalearner.fit(db)
print(len(db), "meta rows, alpha", ml.alpha)

poisoned = run_attack("falfa", suspect, 0.3, seed=0).poisoned
for ds in (suspect, poisoned):
    v = detect(ds, ml, Heuristic(5.0))
    print(v.to_json())
    print("exit code would be", v.exit_code)
