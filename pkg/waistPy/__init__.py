# import modules
from .helpers import WaistError, DegenerateError, NonNormalizableError, NotConvergedError, generator
from .measures import MeasureSpec, density, radialCdf, sampleMeasure, sampleBody, mcMeasure, measureFromDict, measureToDict
from .tube_volumes import (
    gaussianSubspaceTube, sphericalTubeFraction, cpTubeFraction, radialSubspaceTube, modelTube, tubeTable,
    restrictionDominationCheck, pancakenessBound, pancakeRatioBound
)
from .convex_geometry import (
    ConvexBody, Ellipsoid, AffineFlat, bodyFromDict, supportFunction, directionalWidth, gauge, randomPolytope,
    bodyMeasure, equalMeasureCut, johnEllipsoid, pancakeDeficiency, voronoiCell
)
from .pancake_partition import (
    CutTree, PartitionResult, subspaceSequence, randomTreeDirections, buildPartition, equalizeF, verifyPancake,
    partitionTable, pancakeRatioCheck
)
from .monotone_transport import (
    TransportMap, solveMonotoneTransport, transportCenter, lipschitzAudit, monotonicityAudit, caffarelliEligible,
    maResidual, logdetExpansionCheck, gradientGapCheck, centerStability, centerStabilitySchedule, exportPotential,
    readPotential
)
from .maps import TestMap, fiberDistance, fiberProjection, builtinMaps, getMap
from .waist_experiments import (
    Verdict, DemoResult, fiberTubeMeasure, waistCurve, counterexampleCertify, counterexamplePreset, theoremDemo,
    normNeighborhoodCheck
)
from .manifold_tubes import (
    Polynomial, EmbeddedManifold, geodesicDistanceTo, tubeFractionMC, hopfLift, degreeBoundCheck,
    voronoiDisintegrationProbe, circleInvarianceProbe, smoothnessProbe, croftonDegree, hopfConsistency,
    builtinManifolds, getManifold
)
from .config import Config as Config
from .waist import Waist as Waist

__version__ = "0.1.0"
