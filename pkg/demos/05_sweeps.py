"""Exact inequality sweeps, including one that finds counterexamples."""
from lottoprop.checks import check_claim3, check_corollary1, check_intro_inequality

for rep in (check_corollary1(), check_claim3(), check_intro_inequality()):
    print(f"{rep.claim:11s} holds={rep.holds} points={rep.checked} boundary={len(rep.boundary)}")
print("first intro counterexample:", check_intro_inequality().violations[0])
