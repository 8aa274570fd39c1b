# app/storage/result_store.py - CSV结果写出
import logging
from pathlib import Path
from typing import List, Union

import aiofiles
import pandas as pd

from app.schemas.experiment import ResultRow
from app.schemas.irs import DinkelbachTrace
from app.schemas.joint import JointSolution

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"


def raw_path(path: Union[str, Path]) -> Path:
    """<output>.raw.csv"""
    path = Path(path)
    return path.with_name(f"{path.stem}.raw.csv")


class ResultStore:
    """实验结果与迭代轨迹的CSV存储"""

    @staticmethod
    async def _write_frame(df: pd.DataFrame, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        async with aiofiles.open(path, "w", encoding="utf-8", newline="") as f:
            await f.write(df.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n"))
        logger.info(f"Wrote {len(df)} rows to {path}")
        return path

    @staticmethod
    def results_frame(rows: List[ResultRow]) -> pd.DataFrame:
        """列顺序固定: 键列在前，其余按首次出现顺序"""
        return pd.DataFrame([r.flat() for r in rows])

    @staticmethod
    def raw_frame(rows: List[ResultRow]) -> pd.DataFrame:
        return pd.DataFrame([rec.flat() for r in rows for rec in r.records])

    async def write_results(self, rows: List[ResultRow], path: Union[str, Path], raw: bool = True) -> Path:
        out = await self._write_frame(self.results_frame(rows), path)
        if raw and any(r.records for r in rows):
            await self._write_frame(self.raw_frame(rows), raw_path(path))
        return out

    async def write_dinkelbach_trace(
            self,
            traces: Union[DinkelbachTrace, List[DinkelbachTrace]],
            path: Union[str, Path],
    ) -> Path:
        """单条轨迹或按用户对编号的多条轨迹(带pair列)"""
        columns = ["iteration", "eta", "F", "objective"]
        if isinstance(traces, DinkelbachTrace):
            labelled = [(None, traces)]
        else:
            labelled = list(enumerate(traces))
            columns = ["pair"] + columns
        records = [
            {"pair": pair, "iteration": i + 1, "eta": eta, "F": f_value, "objective": obj}
            for pair, trace in labelled
            for i, (eta, f_value, obj) in enumerate(zip(trace.etas, trace.f_values, trace.objectives))
        ]
        return await self._write_frame(pd.DataFrame(records, columns=columns), path)

    async def write_joint_trace(self, solution: JointSolution, path: Union[str, Path]) -> Path:
        df = pd.DataFrame([
            {
                "iteration": r.iteration,
                "branch": r.branch,
                "C": r.c,
                "total_power_w": r.total_power,
                "ratio_gap": r.ratio_gap,
                "pmax_w": r.pmax,
            }
            for r in solution.trace
        ])
        return await self._write_frame(df, path)


result_store = ResultStore()
