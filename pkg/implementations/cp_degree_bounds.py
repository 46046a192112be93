import os
import sys
import pandas as pd

# Allow running from the repo root
REPO_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
sys.path.insert(0, REPO_ROOT)

from waistPy import Config, Waist, getManifold, croftonDegree


def main():
    seed = int(os.getenv('WAIST_SEED', '0'))
    samples = int(os.getenv('WAIST_SAMPLES', str(2 * 10 ** 5)))
    t_grid = [0.2, 0.4, 0.6]
    names = ['cp-line', 'cp-conic', 'fermat-quartic']

    api = Waist(Config(samples=samples, seed=seed))
    frames = []
    for name in names:
        manifold = getManifold(name)
        crofton = croftonDegree(manifold, seed=seed)
        print(f"{name}: degree {manifold.degree}, mean line intersections {crofton['mean_intersections']:.3f}")
        table = api.degreeBoundCheck(manifold, t_grid)
        table.insert(0, 'manifold', name)
        frames.append(table)

    # Display all bounds
    df = pd.concat(frames, ignore_index=True)
    pd.set_option('display.max_columns', None)
    print(df.to_string(index=False))

    # Export to CSV
    output_dir = os.getenv('WAIST_OUTPUT_DIR', os.path.join(REPO_ROOT, 'implementations', 'output'))
    os.makedirs(output_dir, exist_ok=True)
    out_path = os.path.join(output_dir, f'cp_degree_bounds_seed_{seed}.csv')
    try:
        df.to_csv(out_path, index=False)
        print(f"Saved results to: {out_path}")
    except OSError as e:
        print(f"Warning: could not write CSV to {out_path}: {e}")


if __name__ == '__main__':
    main()
