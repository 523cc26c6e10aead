# Pipeline subcommands
