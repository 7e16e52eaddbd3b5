from bellscale.cli import main

main()
