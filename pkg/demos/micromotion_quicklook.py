"""Wave-packet picture of the gate in a pure rf trap, micromotion included.

Evolves all four spin sectors on a 64 x 64 grid (a coarse but quick setting)
and reports how far the ion is pushed in each sector and whether it comes
back. Use the CLI with demos/configs/micromotion_smoke.yaml for the 128 x 128 run.

Run: python3 demos/micromotion_quicklook.py
"""
from rydion.micromotion import Grid2D, default_params, run_micromotion_gate

p = default_params(steps_per_rf=100)
grid = Grid2D.for_params(p, n=64)
print(f"gate time {p.t_end * 1e6:.0f} us, {p.n_steps} steps, ion ground-state width {p.ell_i * 1e9:.1f} nm")

res = run_micromotion_gate(p, grid, n_samples=400)
met = res["metrics"]
for s, m in met.items():
    print(f"  sector {s}: max |<x_i>| {m['max_secular_x_i'] * 1e9:7.3f} nm, "
          f"final {m['final_excursion_x_i'] * 1e9:7.3f} nm, norm drift {m['norm_drift']:.1e}")
print(f"up-up suppression relative to up-down: "
      f"{met['ud']['max_secular_x_i'] / met['uu']['max_secular_x_i']:.0f}x")
