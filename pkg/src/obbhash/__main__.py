from .bench import cli_entry

cli_entry()
