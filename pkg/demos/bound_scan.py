"""Where does the deformed free action exceed the undeformed one?

S_fp <= S0 is the same as |u(x) - u(x')| <= |x - x'|, and du/dx = 1/f is
above 1 exactly on (0, 1/tau).  The map below marks violating pairs.
"""
import numpy as np

from posdeform import bound_scan, make_params

p = make_params(0.1)
xs = np.linspace(-p.ell_max, p.ell_max, 21)
rep = bound_scan(p, xs, 1.0)
bad = {(r["x"], r["x_prime"]) for r in rep.records if not r["pass_action_bound"]}

print("x' \\ x " + "".join(f"{x:>4.0f}" for x in xs))
for xp in xs:
    row = "".join("   #" if (min(x, xp), max(x, xp)) in bad else "   ." for x in xs)
    print(f"{xp:>6.0f} {row}")
s = rep.summary()
print(f"\n{s['action_bound_violated']} of {s['pairs']} pairs violate S_fp <= S0")
