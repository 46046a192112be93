from waistPy.config import Config
from .measures import MeasureSpec
from .convex_geometry import ConvexBody
from .tube_volumes import tubeTable
from .pancake_partition import (
    CutTree, PancakeReport, PartitionResult, buildPartition, equalizeF, randomTreeDirections, subspaceSequence,
    verifyPancake
)
from .monotone_transport import TransportMap, solveMonotoneTransport
from .maps import TestMap
from .waist_experiments import Verdict, DemoResult, waistCurve, counterexampleCertify, theoremDemo, normNeighborhoodCheck
from .manifold_tubes import EmbeddedManifold, tubeFractionMC, degreeBoundCheck, hopfConsistency
from typing import Callable, List, Optional
import numpy as np
import pandas as pd


class Waist:
    def __init__(self, config: Config = Config()):
        self.__config = config

    @property
    def config(self) -> Config:
        return self.__config

    def tGrid(self, t_min: float, t_max: float, points: Optional[int] = None) -> np.ndarray:
        return np.linspace(t_min, t_max, points or self.__config.T_GRID_POINTS)

    def tubeTable(self, ambient: str, n: int, k: int, t_grid, scales: list = None,
                  spec: MeasureSpec = None) -> pd.DataFrame:
        return tubeTable(ambient, n, k, np.asarray(t_grid, dtype=float), scales, spec, self.__config.QUAD_TOL)

    def buildPartition(self, spec: MeasureSpec, R: float, tree_directions) -> PartitionResult:
        return buildPartition(spec, R, tree_directions, tol=self.__config.CUT_TOL, seed=self.__config.SEED)

    def randomPartition(self, spec: MeasureSpec, R: float, k: int, depth: int) -> tuple:
        frames = subspaceSequence(spec.dim, k, depth, self.__config.SEED)
        directions = randomTreeDirections(spec.dim, k, depth, self.__config.SEED, frames)
        return self.buildPartition(spec, R, directions), frames

    def equalizeF(self, spec: MeasureSpec, R: float, F: Callable[[ConvexBody], np.ndarray], depth: int,
                  frames: List[np.ndarray]) -> CutTree:
        return equalizeF(
            spec, R, F, depth, frames, seed=self.__config.SEED, budget=self.__config.SEARCH_BUDGET,
            starts=self.__config.SEARCH_STARTS, spread_target=self.__config.SPREAD_TARGET, tol=self.__config.CUT_TOL,
            cache_tolerance=self.__config.CACHE_TOLERANCE
        )

    def verifyPancake(self, result: PartitionResult, flat_dim: int, spec: MeasureSpec = None,
                      frames: List[np.ndarray] = None) -> PancakeReport:
        return verifyPancake(result, flat_dim, spec, frames, tol=self.__config.CUT_TOL)

    def solveMonotoneTransport(self, source, body: ConvexBody, method: str = "auto", shift=None) -> TransportMap:
        return solveMonotoneTransport(
            source, body, resolution=self.__config.TRANSPORT_RESOLUTION, method=method, shift=shift,
            tv_target=self.__config.TV_TARGET
        )

    def waistCurve(self, spec: MeasureSpec, f: TestMap, y, t_grid, metric: str = "euclidean") -> pd.DataFrame:
        return waistCurve(
            spec, f, y, t_grid, self.__config.SAMPLES, self.__config.SEED, metric, self.__config.DISTANCE_STARTS,
            self.__config.DISTANCE_ITERATIONS, self.__config.THREADS, self.__config.CHUNK,
            tol=self.__config.QUAD_TOL
        )

    def normNeighborhoodCheck(self, body: ConvexBody, f: TestMap, t_grid, y=None,
                              spec: MeasureSpec = None) -> pd.DataFrame:
        return normNeighborhoodCheck(
            body, f, t_grid, self.__config.SAMPLES, self.__config.SEED, y, spec, self.__config.DISTANCE_STARTS
        )

    def counterexampleCertify(self, spec: MeasureSpec, f: TestMap, t_grid, y_candidates,
                              metric: str = "euclidean") -> Verdict:
        return counterexampleCertify(
            spec, f, t_grid, y_candidates, self.__config.SAMPLES, self.__config.SEED, metric,
            self.__config.VIOLATION_SIGMAS, self.__config.DISTANCE_STARTS, self.__config.DISTANCE_ITERATIONS,
            self.__config.THREADS, self.__config.CHUNK
        )

    def theoremDemo(self, scales: list, f: TestMap, depth: int, R: float, t_grid) -> DemoResult:
        return theoremDemo(
            scales, f, depth, R, t_grid, seed=self.__config.SEED, count=self.__config.SAMPLES,
            search_resolution=self.__config.SEARCH_RESOLUTION, starts=self.__config.SEARCH_STARTS,
            spread_target=self.__config.SPREAD_TARGET, distance_starts=self.__config.DISTANCE_STARTS,
            threads=self.__config.THREADS
        )

    def tubeFractionMC(self, manifold: EmbeddedManifold, t) -> pd.DataFrame:
        return tubeFractionMC(
            manifold, t, self.__config.SAMPLES, self.__config.SEED, starts=self.__config.VARIETY_STARTS,
            iterations=self.__config.DISTANCE_ITERATIONS, threads=self.__config.THREADS, chunk=self.__config.CHUNK
        )

    def degreeBoundCheck(self, manifold: EmbeddedManifold, t_grid, degree: Optional[int] = None) -> pd.DataFrame:
        return degreeBoundCheck(
            manifold, t_grid, self.__config.SAMPLES, self.__config.SEED, degree, self.__config.VARIETY_STARTS,
            self.__config.THREADS, self.__config.CHUNK
        )

    def hopfConsistency(self, manifold: EmbeddedManifold, t: float) -> dict:
        return hopfConsistency(
            manifold, t, self.__config.SAMPLES, self.__config.SEED, self.__config.VARIETY_STARTS,
            self.__config.THREADS, self.__config.CHUNK
        )
