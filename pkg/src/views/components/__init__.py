# Ce fichier permet l'importation des modules du package components 