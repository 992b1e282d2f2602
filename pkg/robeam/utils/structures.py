__all__ = ["RESTRICTION_REGISTRY", "COMMAND_REGISTRY"]

from fvcore.common.registry import Registry

Registry.__doc__ = """
The registry that provides `name -> object mapping`, to support third-party users' custom modules.
"""
Registry.register.__doc__ = """
Register the given object under the the name `obj.__name__`. Can also be used a `decorator`.
"""
Registry.get.__doc__ = "Retrive an object from the Registry"


RESTRICTION_REGISTRY = Registry("Restrictions")
RESTRICTION_REGISTRY.__doc__ = """
Registry for power-minimization program builders. The registered object
is called with `(ChannelSet, ScenarioConfig)` and is expected to return a `ConicProgram`.
"""


COMMAND_REGISTRY = Registry("Commands")
COMMAND_REGISTRY.__doc__ = """
Registry for the sub-commands of the `robeam` command line tool. The registered
object is called with the `RunContext` of the command and returns an exit code.
"""
