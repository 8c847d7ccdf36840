class InfeasibleError(Exception):
    """A workload cannot run under the requested strategy on this cluster."""


class SingleLayerTooLarge(InfeasibleError):
    def __init__(self, layer_index: int, footprint: int, capacity: int):
        self.layer_index = layer_index
        self.footprint = footprint
        self.capacity = capacity
        super().__init__(f"layer {layer_index} needs {footprint} B but only {capacity} B fit on the device")

    @property
    def deficit_bytes(self) -> int:
        return self.footprint - self.capacity


class DeviceTooSmall(InfeasibleError):
    def __init__(self, device_id: str, deficit_bytes: int):
        self.device_id = device_id
        self.deficit_bytes = deficit_bytes
        super().__init__(f"device {device_id} has no room left after buffer and batch "
                         f"(short by {deficit_bytes} B)")


class InfeasibleOOM(InfeasibleError):
    def __init__(self, job_id: str, device_id: str, deficit_bytes: int):
        self.job_id = job_id
        self.device_id = device_id
        self.deficit_bytes = deficit_bytes
        super().__init__(f"job {job_id} does not fit on {device_id}: short by {deficit_bytes} B")


class HostOOM(InfeasibleError):
    def __init__(self, needed_bytes: int, host_bytes: int):
        self.needed_bytes = needed_bytes
        self.host_bytes = host_bytes
        self.deficit_bytes = needed_bytes - host_bytes
        super().__init__(f"spilled model state needs {needed_bytes} B of host DRAM, have {host_bytes} B")


class DeadlockError(RuntimeError):
    pass


class BufferOverflow(RuntimeError):
    pass


class InstanceTooLarge(ValueError):
    pass


class ConfigError(ValueError):
    pass


class BufferTooSmall(InfeasibleError):
    def __init__(self, job_id: str, shard_index: int, param_bytes: int, buffer_bytes: int):
        self.job_id = job_id
        self.shard_index = shard_index
        self.deficit_bytes = param_bytes - buffer_bytes
        super().__init__(f"job {job_id} shard {shard_index} has {param_bytes} B of parameters; "
                         f"the prefetch buffer holds {buffer_bytes} B")
