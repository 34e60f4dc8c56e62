"""Learning folksonomies by aggregating many small user-made hierarchies."""

from folkweave.cluster import SenseIndex, cluster_senses
from folkweave.config import load_config
from folkweave.evaluate import ReferenceTaxonomy, evaluate
from folkweave.grow import grow_tree
from folkweave.ingest import build_saplings, load_records
from folkweave.model import FolksonomyTree, Params, Sapling, TagStats

__version__ = "0.1.0"

__all__ = [
    "FolksonomyTree",
    "Params",
    "ReferenceTaxonomy",
    "Sapling",
    "SenseIndex",
    "TagStats",
    "build_saplings",
    "cluster_senses",
    "evaluate",
    "grow_tree",
    "load_config",
    "load_records",
]
