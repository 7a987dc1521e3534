"""
GRANULA - Dataset Catalog

Ingestion profiles for the UCI benchmark files, keyed by dataset id.
Files are never downloaded; users point --data at a local copy and the
profile supplies the header / id-column / label-column flags.
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from data.dataset import Dataset, SyntheticSpec, gen_synthetic, load_csv

logger = logging.getLogger("granula.data.catalog")

SYNTHETIC_ID = "synthetic"


@dataclass(frozen=True)
class DatasetProfile:
    dataset_id: str
    title: str
    has_header: bool = False
    drop_first_columns: int = 0
    drop_last_column: bool = True
    n_rows: Optional[int] = None
    n_features: Optional[int] = None
    aliases: Tuple[str, ...] = field(default_factory=tuple)


PROFILES: Dict[str, DatasetProfile] = {
    p.dataset_id: p for p in [
        DatasetProfile("iris", "Iris", has_header=True, n_rows=150, n_features=4,
                       aliases=("iris", "iris_data")),
        DatasetProfile("user", "User Knowledge Modeling", has_header=True, n_rows=403, n_features=5,
                       aliases=("user", "user_knowledge", "data_user_modeling")),
        DatasetProfile("glass", "Glass Identification", drop_first_columns=1, n_rows=214, n_features=9,
                       aliases=("glass", "glass_data")),
        # statlog heart ships space-separated; supply a comma-separated copy
        DatasetProfile("heart", "Statlog (Heart)", n_rows=270, n_features=13,
                       aliases=("heart", "statlog_heart")),
        DatasetProfile("sonar", "Connectionist Bench (Sonar)", n_rows=208, n_features=60,
                       aliases=("sonar", "sonar_all_data", "connectionist_bench")),
        DatasetProfile("wine", "Wine", drop_first_columns=1, drop_last_column=False,
                       n_rows=178, n_features=13, aliases=("wine", "wine_data")),
        DatasetProfile("wdbc", "Breast Cancer (Wisconsin Diagnostic)", drop_first_columns=2,
                       drop_last_column=False, n_rows=569, n_features=30,
                       aliases=("wdbc", "wdbc_data", "breast_cancer")),
        DatasetProfile("buddymove", "Buddy Move", has_header=True, drop_first_columns=1,
                       drop_last_column=False, n_rows=249, n_features=6,
                       aliases=("buddymove", "buddymove_holidayiq", "buddy_move")),
    ]
}


def _stem(path: str) -> str:
    base = os.path.basename(path).lower()
    for ext in (".csv", ".data", ".dat", ".txt", ".all-data"):
        if base.endswith(ext):
            base = base[: -len(ext)]
    return base.replace("-", "_").replace(".", "_")


def resolve_profile(path: str) -> Optional[DatasetProfile]:
    """Match a local file to a catalog profile by its file name."""
    stem = _stem(path)
    for profile in PROFILES.values():
        if stem in profile.aliases:
            return profile
    return None


def dataset_ids() -> List[str]:
    return [SYNTHETIC_ID] + sorted(PROFILES)


def load_dataset(
    ref: str,
    has_header: Optional[bool] = None,
    drop_last_column: Optional[bool] = None,
    drop_first_columns: Optional[int] = None,
    synthetic: Optional[SyntheticSpec] = None,
) -> Dataset:
    """'synthetic' builds the blob benchmark; anything else is a CSV path.

    Explicit flags win over the catalog profile matched from the file name.
    """
    if ref == SYNTHETIC_ID:
        return gen_synthetic(synthetic or SyntheticSpec())

    profile = resolve_profile(ref)
    if profile is not None:
        logger.info(f"Using catalog profile '{profile.dataset_id}' ({profile.title}) for {ref}")
    header = has_header if has_header is not None else (profile.has_header if profile else False)
    drop_last = drop_last_column if drop_last_column is not None else (profile.drop_last_column if profile else False)
    drop_first = drop_first_columns if drop_first_columns is not None else (profile.drop_first_columns if profile else 0)
    source_id = profile.dataset_id if profile else _stem(ref)

    dataset = load_csv(ref, has_header=header, drop_last_column=drop_last,
                       drop_first_columns=drop_first, source_id=source_id)
    if profile and profile.n_features is not None and dataset.n_features != profile.n_features:
        logger.warning(
            f"{ref}: {dataset.n_features} features, catalog expects {profile.n_features} for '{profile.dataset_id}'"
        )
    return dataset
