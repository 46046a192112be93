import os
import sys
import pandas as pd

# Allow running from the repo root
REPO_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
sys.path.insert(0, REPO_ROOT)

from waistPy import Config, Waist, getMap


def main():
    seed = int(os.getenv('WAIST_SEED', '0'))
    samples = int(os.getenv('WAIST_SAMPLES', str(10 ** 6)))
    scales = [1.0, 2.0]
    t_grid = [0.25, 0.5, 1.0, 2.0]

    api = Waist(Config(samples=samples, seed=seed))
    print(f"Equalizing f(center) over 4 pancakes of gamma_a, a = {scales} (seed {seed})")
    result = api.theoremDemo(scales, getMap('wavy', 2, 1), depth=2, R=6.0, t_grid=t_grid)

    # Show the cut tree and the waist curve
    print(f"Spread of f(center) over the leaves: {result.tree.spread:.2e} (converged: {result.converged})")
    print(f"Common value y = {result.y_found[0]:.6f}")
    pd.set_option('display.max_columns', None)
    print(result.curve.to_string(index=False))
    if not result.passes:
        print("Warning: the measured waist falls below the model bound beyond the tolerance.")

    # Export curve to CSV
    output_dir = os.getenv('WAIST_OUTPUT_DIR', os.path.join(REPO_ROOT, 'implementations', 'output'))
    os.makedirs(output_dir, exist_ok=True)
    out_path = os.path.join(output_dir, f'gaussian_waist_demo_seed_{seed}.csv')
    try:
        result.curve.to_csv(out_path, index=False)
        print(f"Saved curve to: {out_path}")
    except OSError as e:
        print(f"Warning: could not write CSV to {out_path}: {e}")


if __name__ == '__main__':
    main()
