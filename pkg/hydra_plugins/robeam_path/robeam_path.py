from hydra.core.config_search_path import ConfigSearchPath
from hydra.plugins.search_path_plugin import SearchPathPlugin


class RobeamPathPlugin(SearchPathPlugin):
    "Makes the user presets in `references/` composable next to the packaged ones"

    def manipulate_search_path(self, search_path: ConfigSearchPath) -> None:
        search_path.append(provider="robeam", path="pkg://robeam.conf")
        search_path.append(provider="robeam", path="pkg://references")
