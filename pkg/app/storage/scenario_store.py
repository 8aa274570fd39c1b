# app/storage/scenario_store.py - 场景文件读写
import json
import logging
from pathlib import Path
from typing import Any, List, Tuple, Union

import aiofiles
import numpy as np
from pydantic import ValidationError

from app.exceptions import ConfigError
from app.schemas.scenario import ScenarioConfig, UserPairChannels

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def encode_matrix(a: np.ndarray) -> List[List[List[float]]]:
    """复矩阵 → 行优先的 [re, im] 列表"""
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.atleast_2d(a)]


def decode_matrix(rows: Any) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ValueError(f"expected rows of [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


class ScenarioStore:
    """场景 (配置 + 各用户对统计信道) 的JSON存储"""

    @staticmethod
    def to_document(cfg: ScenarioConfig, pairs: List[UserPairChannels]) -> dict:
        return {
            "version": FORMAT_VERSION,
            "config": cfg.model_dump(),
            "pairs": [
                {
                    "r_h": encode_matrix(p.r_h),
                    "r_g": encode_matrix(p.r_g),
                    "g": encode_matrix(p.g),
                    "c2_strong": p.c2_strong,
                    "c2_weak": p.c2_weak,
                    "aod_strong": list(p.aod_strong),
                    "aod_weak": list(p.aod_weak),
                    "aod_bs_irs": [list(x) for x in p.aod_bs_irs],
                }
                for p in pairs
            ],
        }

    @staticmethod
    def from_document(doc: dict) -> Tuple[ScenarioConfig, List[UserPairChannels]]:
        try:
            cfg = ScenarioConfig.model_validate(doc["config"])
            pairs = [
                UserPairChannels(
                    r_h=decode_matrix(p["r_h"]),
                    r_g=decode_matrix(p["r_g"]),
                    g=decode_matrix(p["g"]),
                    c2_strong=p["c2_strong"],
                    c2_weak=p["c2_weak"],
                    aod_strong=p["aod_strong"],
                    aod_weak=p.get("aod_weak", []),
                    aod_bs_irs=[tuple(x) for x in p.get("aod_bs_irs", [])],
                )
                for p in doc["pairs"]
            ]
        except KeyError as e:
            raise ConfigError(f"scenario document is missing {e}")
        except (ValidationError, ValueError) as e:
            raise ConfigError(f"invalid scenario document: {e}")
        if len(pairs) != cfg.num_pairs:
            raise ConfigError(f"scenario has {len(pairs)} pairs, config declares {cfg.num_pairs}")
        return cfg, pairs

    async def dump_scenario(
            self,
            cfg: ScenarioConfig,
            pairs: List[UserPairChannels],
            path: Union[str, Path],
    ) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        async with aiofiles.open(path, "w", encoding="utf-8") as f:
            await f.write(json.dumps(self.to_document(cfg, pairs)))
        logger.info(f"Scenario with {len(pairs)} pairs written to {path}")
        return path

    async def load_scenario(self, path: Union[str, Path]) -> Tuple[ScenarioConfig, List[UserPairChannels]]:
        path = Path(path)
        try:
            async with aiofiles.open(path, "r", encoding="utf-8") as f:
                text = await f.read()
        except OSError as e:
            raise ConfigError(f"cannot read scenario file {path}: {e.strerror}", context={"path": str(path)})
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(
                f"malformed scenario file {path}: {e.msg}",
                context={"path": str(path), "line": e.lineno, "column": e.colno},
            )
        return self.from_document(doc)


scenario_store = ScenarioStore()
