# app/storage/__init__.py
from app.storage.result_store import result_store
from app.storage.scenario_store import scenario_store

__all__ = ["result_store", "scenario_store"]
