from ctxrep.main import main

main()
