# How hard is a dataset? Complexity measures on easy vs hard synthetic data,
# and what label flips do to them.
from flipdetect.attacks import sln
from flipdetect.cmeasures import extract_dict
from flipdetect.data import synth_by_difficulty

easy = synth_by_difficulty("easy", 1, seed=0)[0]
hard = synth_by_difficulty("hard", 1, seed=0)[0]
print(easy.name, easy.n, "rows", easy.d, "features")
print(hard.name, hard.n, "rows", hard.d, "features")

m_easy = extract_dict(easy)
m_hard = extract_dict(hard)
print(f"{'measure':10s} {'easy':>8s} {'hard':>8s}")
for name in m_easy:
    print(f"{name:10s} {m_easy[name]:8.3f} {m_hard[name]:8.3f}")

# neighbourhood measures react to flipped labels even though features are untouched
noisy = sln(easy, 0.2, seed=1).poisoned
m_noisy = extract_dict(noisy)
for name in ("N1", "N3", "L2", "Density"):
    print(f"{name}: clean {m_easy[name]:.3f} -> 20% noise {m_noisy[name]:.3f}")
