"""Hierarchical task runtime: one task program, many executor configurations."""
from .data import (DataHandle, MatrixStore, PartitionSpec, create_data, fill_spd,
                   get_partition, num_partitions, read_region, write_region)
from .errors import (ConfigurationError, DeadlockError, NumericalError, RegistryError,
                     TaskFailure, UsageError)
from .tasks import (R, RW, AccessMode, EpochLedger, Operation, Task, TaskState, create_task,
                    get_operation, is_ready, record_access, register_operation)
from .config import FlowGraph, NodeSpec, parse, preset, render
from .dispatcher import Dispatcher, configure
from .cholesky import cholesky, residual

__all__ = [
    "DataHandle", "MatrixStore", "PartitionSpec", "create_data", "fill_spd", "get_partition",
    "num_partitions", "read_region", "write_region",
    "ConfigurationError", "DeadlockError", "NumericalError", "RegistryError", "TaskFailure",
    "UsageError",
    "R", "RW", "AccessMode", "EpochLedger", "Operation", "Task", "TaskState", "create_task",
    "get_operation", "is_ready", "record_access", "register_operation",
    "FlowGraph", "NodeSpec", "parse", "preset", "render",
    "Dispatcher", "configure", "cholesky", "residual",
]
