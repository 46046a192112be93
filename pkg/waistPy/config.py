class Config(object):
    def __init__(
            self,
            samples: int = 10 ** 6,
            seed: int = 0,
            chunk: int = 2 ** 16,
            threads: int = 1,
            t_grid_points: int = 64,
            quad_tol: float = 1e-10,
            cut_tol: float = 1e-6,
            spread_target: float = 1e-3,
            search_starts: int = 64,
            search_budget: int = 10 ** 4,
            distance_starts: int = 8,
            distance_iterations: int = 100,
            variety_starts: int = 16,
            transport_resolution: int = 128,
            search_resolution: int = 16,
            tv_target: float = 0.02,
            cache_tolerance: float = 1e-9,
            violation_sigmas: float = 3.0
    ):
        self.SAMPLES = samples
        self.SEED = seed
        self.CHUNK = chunk
        self.THREADS = threads
        self.T_GRID_POINTS = t_grid_points
        self.QUAD_TOL = quad_tol
        self.CUT_TOL = cut_tol
        self.SPREAD_TARGET = spread_target
        self.SEARCH_STARTS = search_starts
        self.SEARCH_BUDGET = search_budget
        self.DISTANCE_STARTS = distance_starts
        self.DISTANCE_ITERATIONS = distance_iterations
        self.VARIETY_STARTS = variety_starts
        self.TRANSPORT_RESOLUTION = transport_resolution
        self.SEARCH_RESOLUTION = search_resolution
        self.TV_TARGET = tv_target
        self.CACHE_TOLERANCE = cache_tolerance
        self.VIOLATION_SIGMAS = violation_sigmas
